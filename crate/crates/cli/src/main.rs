fn main() {
    std::process::exit(prectune_cli::run(std::env::args_os()));
}
