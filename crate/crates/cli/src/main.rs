fn main() {
    std::process::exit(mhiforge_cli::run(std::env::args_os()));
}
