fn main() {
    std::process::exit(kfs::cli::run(std::env::args_os()));
}
