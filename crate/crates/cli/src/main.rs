fn main() { println!("{}", pshf_core::placeholder()); }
