fn main() {
    std::process::exit(ollp_core::cli::cli_main(std::env::args_os()));
}
