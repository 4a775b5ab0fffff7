fn main() {
    std::process::exit(handanno::cli::run(std::env::args_os()));
}
