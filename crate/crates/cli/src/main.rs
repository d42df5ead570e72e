fn main() {
    std::process::exit(worldmem_cli::main_with(std::env::args_os()));
}
