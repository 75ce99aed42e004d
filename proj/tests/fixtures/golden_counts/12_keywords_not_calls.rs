unsafe fn outer(k: u32) -> u32 {
    if (k > 1) {
        helper(k)
    } else {
        k
    }
}

fn helper(k: u32) -> u32 {
    k + 1
}
