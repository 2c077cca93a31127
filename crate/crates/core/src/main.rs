fn main() {
    std::process::exit(weylcalc::cli::run(std::env::args_os()));
}
