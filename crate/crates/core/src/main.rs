fn main() {
    std::process::exit(scanqa::cli::dispatch(std::env::args_os()));
}
