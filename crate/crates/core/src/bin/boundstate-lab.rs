fn main() {
    std::process::exit(boundstate_lab::cli::run(std::env::args_os()));
}
