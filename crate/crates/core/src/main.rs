fn main() {
    std::process::exit(ensemble_roc::cli::run(std::env::args_os()));
}
