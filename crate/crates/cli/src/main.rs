fn main() {
    std::process::exit(ris_hybrid_cli::run(std::env::args_os()));
}
