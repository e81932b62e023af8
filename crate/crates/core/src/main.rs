fn main() {
    std::process::exit(cgo_waveguide::cli::main_entry());
}
