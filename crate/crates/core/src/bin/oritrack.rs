fn main() {
    std::process::exit(oritrack::cli::run(std::env::args_os()));
}
