fn main() {
    let x: i32 = "this is not an i32";
    println!("{}", x);
}
