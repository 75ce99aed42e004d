static mut CURSOR: *mut *mut u8 = std::ptr::null_mut();

fn reset() {
    unsafe {
        CURSOR = std::ptr::null_mut();
    }
}
