fn main() {
    std::process::exit(gridbench::run_cli());
}
