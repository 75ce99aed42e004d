unsafe fn scale(p: *mut f64, k: f64) -> f64 {
    let a = *p * k;
    *p = a * 2.0;
    a
}
