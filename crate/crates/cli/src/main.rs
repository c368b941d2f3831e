fn main() {
    std::process::exit(nash_spectra_cli::run(std::env::args_os()));
}
