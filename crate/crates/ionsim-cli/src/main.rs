fn main() {
    std::process::exit(ionsim_cli::app::main_entry());
}
