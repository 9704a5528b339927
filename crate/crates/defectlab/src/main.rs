fn main() {
    std::process::exit(defectlab::cli::run(std::env::args_os()));
}
