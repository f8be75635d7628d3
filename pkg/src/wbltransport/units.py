"""Physical constants. Energies in eV, times in fs."""

HBAR = 0.6582119569  # eV fs
NA_PER_E_PER_FS = 1.602176634e5  # 1 electron/fs in nA

CURRENT_SCALE = {"nA": NA_PER_E_PER_FS, "uA": NA_PER_E_PER_FS * 1e-3}
