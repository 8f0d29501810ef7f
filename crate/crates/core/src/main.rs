fn main() {
    std::process::exit(caid::cli::main(std::env::args_os()));
}
