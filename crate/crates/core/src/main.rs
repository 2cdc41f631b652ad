fn main() {
    std::process::exit(lastpassage::cli::run(std::env::args_os()));
}
