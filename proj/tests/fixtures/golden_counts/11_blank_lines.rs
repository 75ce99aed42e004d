fn spaced(p: *const u32) -> u32 {
    unsafe {
        let a = *p;

        let b = *p;

        a + b
    }
}
