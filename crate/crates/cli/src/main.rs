fn main() {
    std::process::exit(urbanpulse_cli::run(std::env::args_os()));
}
