fn main() {
    std::process::exit(sscf::cli::main_with(std::env::args_os()));
}
