fn main() {
    vmsns::io::cli::init_parallelism();
    std::process::exit(vmsns::io::run_cli(std::env::args_os()));
}
