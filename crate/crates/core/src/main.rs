fn main() {
    std::process::exit(bochner_ls::harness::cli::cli_main(std::env::args_os()));
}
