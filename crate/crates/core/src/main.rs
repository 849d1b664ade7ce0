fn main() {
    std::process::exit(rdsvar::cli::main_with_args(std::env::args_os()));
}
