fn main() {
    // CLI filled in once the library surface is complete.
    eprintln!("dynlab: not yet wired");
    std::process::exit(4);
}
