fn main() {
    std::process::exit(rossler_knots_cli::run(std::env::args_os()));
}
