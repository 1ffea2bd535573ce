fn main() {
    std::process::exit(nldp_core::cli::run());
}
