fn main() {
    std::process::exit(divrec::pipeline::cli(std::env::args()));
}
