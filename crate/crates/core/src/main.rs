fn main() {
    std::process::exit(rmt_thermal::cli::main_with_args(std::env::args_os()));
}
