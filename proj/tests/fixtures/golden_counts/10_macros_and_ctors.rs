fn reinterpret(x: u64) -> Option<f64> {
    unsafe {
        let y: f64 = std::mem::transmute(x);
        println!("{}", y);
        Some(y)
    }
}
