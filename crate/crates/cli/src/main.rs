fn main() {
    std::process::exit(sgpca_cli::cli_main(std::env::args_os()));
}
