fn main() {
    std::process::exit(hbl::cli::parse_and_dispatch(std::env::args_os()));
}
