fn main() {
    std::process::exit(fima::cli::run(std::env::args_os()));
}
