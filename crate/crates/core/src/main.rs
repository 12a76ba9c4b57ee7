fn main() {
    std::process::exit(dct_snn::cli::main_with_args(std::env::args_os()));
}
