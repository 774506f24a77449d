fn main() {
    std::process::exit(plurikit::run(std::env::args_os()));
}
