fn double(x: i64) -> i64 {
    x * 2
}

fn main() {
    let mut line = String::new();
    std::io::stdin().read_line(&mut line).unwrap();
    let n: i64 = line.trim().parse().unwrap_or(0);
    println!("{}", double(n));
}
