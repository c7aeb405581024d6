/// Puts the current thread's floating-point unit into flush-to-zero mode
/// until dropped, restoring the previous mode afterwards.
///
/// Saturated gates and near-zero losses produce subnormal intermediates late
/// in training, and subnormal arithmetic is very slow on common CPUs. On
/// targets without a known control register this is a no-op.
pub struct FlushToZero {
    #[allow(dead_code)]
    saved: usize,
}

impl FlushToZero {
    pub fn enable() -> Self {
        let saved = read_control();
        write_control(saved | FTZ_BITS);
        FlushToZero { saved }
    }
}

impl Drop for FlushToZero {
    fn drop(&mut self) {
        write_control(self.saved);
    }
}

#[cfg(target_arch = "x86_64")]
const FTZ_BITS: usize = 0x8040; // FTZ | DAZ

#[cfg(target_arch = "x86_64")]
fn read_control() -> usize {
    let mut csr: u32 = 0;
    // SAFETY: stmxcsr stores the SSE control register into a valid u32.
    unsafe {
        std::arch::asm!("stmxcsr [{}]", in(reg) &mut csr, options(nostack, preserves_flags));
    }
    csr as usize
}

#[cfg(target_arch = "x86_64")]
fn write_control(v: usize) {
    let csr = v as u32;
    // SAFETY: the value is either a saved register state or one with FTZ/DAZ added.
    unsafe {
        std::arch::asm!("ldmxcsr [{}]", in(reg) &csr, options(nostack, preserves_flags));
    }
}

#[cfg(target_arch = "aarch64")]
const FTZ_BITS: usize = 1 << 24;

#[cfg(target_arch = "aarch64")]
fn read_control() -> usize {
    let fpcr: u64;
    // SAFETY: reading FPCR has no side effects.
    unsafe {
        std::arch::asm!("mrs {}, fpcr", out(reg) fpcr, options(nomem, nostack, preserves_flags));
    }
    fpcr as usize
}

#[cfg(target_arch = "aarch64")]
fn write_control(v: usize) {
    // SAFETY: the value is either a saved register state or one with FZ added.
    unsafe {
        std::arch::asm!("msr fpcr, {}", in(reg) v as u64, options(nomem, nostack, preserves_flags));
    }
}

#[cfg(not(any(target_arch = "x86_64", target_arch = "aarch64")))]
const FTZ_BITS: usize = 0;

#[cfg(not(any(target_arch = "x86_64", target_arch = "aarch64")))]
fn read_control() -> usize {
    0
}

#[cfg(not(any(target_arch = "x86_64", target_arch = "aarch64")))]
fn write_control(_: usize) {}
