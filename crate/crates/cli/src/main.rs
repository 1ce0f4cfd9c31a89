fn main() {
    std::process::exit(lcc_cli::run(std::env::args_os()));
}
