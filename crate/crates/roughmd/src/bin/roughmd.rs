fn main() {
    std::process::exit(roughmd::run(std::env::args_os()));
}
