fn main() {
    std::process::exit(wap_homog::harness::run_cli(std::env::args_os()));
}
