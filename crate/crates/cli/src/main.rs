fn main() {
    std::process::exit(dcfwb::main_with(std::env::args_os()));
}
