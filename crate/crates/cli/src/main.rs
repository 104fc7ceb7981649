fn main() {
    std::process::exit(cs_scan::run(std::env::args_os()));
}
