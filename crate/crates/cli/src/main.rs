fn main() {
    std::process::exit(rydberg_rx_cli::run(std::env::args_os()));
}
