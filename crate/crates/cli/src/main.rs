fn main() {
    std::process::exit(hpa_cli::main_entry());
}
