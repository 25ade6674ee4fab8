fn main() {
    std::process::exit(qvortex::cli::run(std::env::args_os()));
}
