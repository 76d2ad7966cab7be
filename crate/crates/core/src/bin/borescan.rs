fn main() {
    std::process::exit(borescan::cli::run(std::env::args_os()));
}
