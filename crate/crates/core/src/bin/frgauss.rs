fn main() {
    std::process::exit(frgauss::cli::run(std::env::args_os()));
}
