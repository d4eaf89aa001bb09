fn main() {
    std::process::exit(desmooth::cli::run(std::env::args_os()));
}
