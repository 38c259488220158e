fn main() {
    std::process::exit(curveforge_cli::run(std::env::args_os()));
}
