unsafe trait Zeroed {}
unsafe impl Zeroed for u32 {}

extern "C" {
    fn c_hash(data: *const u8, len: usize) -> u64;
}

fn call_it(v: &[u8]) -> u64 {
    unsafe { c_hash(v.as_ptr(), v.len()) }
}
