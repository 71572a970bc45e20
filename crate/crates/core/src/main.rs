fn main() {
    std::process::exit(dyadic_spectra::cli::run(std::env::args_os().skip(1)));
}
