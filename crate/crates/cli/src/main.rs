fn main() {
    std::process::exit(inpaint_cli::run_cli(std::env::args_os()));
}
