fn main() {
    std::process::exit(varma_patch::cli::run(std::env::args_os()));
}
