fn main() {
    std::process::exit(wigner_g2::cli::run_from_args(std::env::args_os()));
}
