fn main() {
    std::process::exit(haarlab::lab::cli_main(std::env::args_os()));
}
