fn main() {
    std::process::exit(bodyorient_cli::run(std::env::args_os()));
}
