fn demo(a: *const i32, b: *mut i32) -> i32 {
    let mut total = 0;
    unsafe {
        total += *a;
        *b = total + *a;
        helper(b as *mut u8);
        total
    }
}
