fn main() {
    std::process::exit(ebl_cli::run(std::env::args_os()));
}
