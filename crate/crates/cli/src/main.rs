fn main() {
    std::process::exit(chiral_berry_cli::main_with_args(std::env::args_os()));
}
