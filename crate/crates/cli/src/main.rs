fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(courtpose_cli::run(&argv));
}
