unsafe fn nested(p: *mut i32) {
    *p = 1;
    unsafe {
        *p = 2;
    }
    *p = 3;
}
