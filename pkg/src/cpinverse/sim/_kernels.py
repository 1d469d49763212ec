"""Compiled Yee updates (CPML + Drude ADE).

E update per location, Drude current at half steps:
    J^{n+1/2} = kd J^{n-1/2} + bd E^n      (kd, bd per location)
    E^{n+1}   = ca E^n + cb (curl H^{n+1/2} - J^{n+1/2})
PML derivatives are replaced by kinv * d + psi with psi = b psi + c d.
In the 2D Ex update the y derivative becomes ar_j (dHz/dy) + sr_j <Hz>_j:
ar = 1, sr = 0 for Cartesian runs; for axial symmetry sr = 1/y off the
axis, and ar = 2, sr = 0 on it, the discrete (1/r) d(r H)/dr.
"""

from numba import njit


@njit(cache=True, nogil=True)
def update_h_2d(Hz, Ex, Ey, psi_hzx, psi_hzy, bx, cx, kx, by, cy, ky, dt, dx):
    nx, ny = Hz.shape
    for i in range(nx):
        for j in range(ny):
            dey = (Ey[i + 1, j] - Ey[i, j]) / dx
            dex = (Ex[i, j + 1] - Ex[i, j]) / dx
            px = bx[i] * psi_hzx[i, j] + cx[i] * dey
            py = by[j] * psi_hzy[i, j] + cy[j] * dex
            psi_hzx[i, j] = px
            psi_hzy[i, j] = py
            Hz[i, j] -= dt * ((kx[i] * dey + px) - (ky[j] * dex + py))


@njit(cache=True, nogil=True)
def update_e_2d(Ex, Ey, Hz, Jx, Jy, cax, cbx, bdx, kdx, cay, cby, bdy, kdy,
                psi_exy, psi_eyx, bx, cx, kx, by, cy, ky, ar, sr, dx):
    nx, ny = Hz.shape
    for i in range(nx):
        for j in range(1, ny):
            d = (Hz[i, j] - Hz[i, j - 1]) / dx
            p = by[j] * psi_exy[i, j] + cy[j] * d
            psi_exy[i, j] = p
            curl = ar[j] * (ky[j] * d + p) + sr[j] * 0.5 * (Hz[i, j] + Hz[i, j - 1])
            jn = kdx[i, j] * Jx[i, j] + bdx[i, j] * Ex[i, j]
            Jx[i, j] = jn
            Ex[i, j] = cax[i, j] * Ex[i, j] + cbx[i, j] * (curl - jn)
    for i in range(1, nx):
        for j in range(ny):
            d = (Hz[i, j] - Hz[i - 1, j]) / dx
            p = bx[i] * psi_eyx[i, j] + cx[i] * d
            psi_eyx[i, j] = p
            curl = -(kx[i] * d + p)
            jn = kdy[i, j] * Jy[i, j] + bdy[i, j] * Ey[i, j]
            Jy[i, j] = jn
            Ey[i, j] = cay[i, j] * Ey[i, j] + cby[i, j] * (curl - jn)


@njit(cache=True, nogil=True)
def update_h_3d(Hx, Hy, Hz, Ex, Ey, Ez,
                p_hxy, p_hxz, p_hyz, p_hyx, p_hzx, p_hzy,
                bx, cx, kx, by, cy, ky, bz, cz, kz, dt, dx):
    nx, ny, nz = Hx.shape[0] - 1, Hx.shape[1], Hx.shape[2]
    # Hx (nx+1, ny, nz): -(dEz/dy - dEy/dz)
    for i in range(nx + 1):
        for j in range(ny):
            for k in range(nz):
                dzy = (Ez[i, j + 1, k] - Ez[i, j, k]) / dx
                dyz = (Ey[i, j, k + 1] - Ey[i, j, k]) / dx
                a = by[j] * p_hxy[i, j, k] + cy[j] * dzy
                b = bz[k] * p_hxz[i, j, k] + cz[k] * dyz
                p_hxy[i, j, k] = a
                p_hxz[i, j, k] = b
                Hx[i, j, k] -= dt * ((ky[j] * dzy + a) - (kz[k] * dyz + b))
    # Hy (nx, ny+1, nz): -(dEx/dz - dEz/dx)
    for i in range(nx):
        for j in range(ny + 1):
            for k in range(nz):
                dxz = (Ex[i, j, k + 1] - Ex[i, j, k]) / dx
                dzx = (Ez[i + 1, j, k] - Ez[i, j, k]) / dx
                a = bz[k] * p_hyz[i, j, k] + cz[k] * dxz
                b = bx[i] * p_hyx[i, j, k] + cx[i] * dzx
                p_hyz[i, j, k] = a
                p_hyx[i, j, k] = b
                Hy[i, j, k] -= dt * ((kz[k] * dxz + a) - (kx[i] * dzx + b))
    # Hz (nx, ny, nz+1): -(dEy/dx - dEx/dy)
    for i in range(nx):
        for j in range(ny):
            for k in range(nz + 1):
                dyx = (Ey[i + 1, j, k] - Ey[i, j, k]) / dx
                dxy = (Ex[i, j + 1, k] - Ex[i, j, k]) / dx
                a = bx[i] * p_hzx[i, j, k] + cx[i] * dyx
                b = by[j] * p_hzy[i, j, k] + cy[j] * dxy
                p_hzx[i, j, k] = a
                p_hzy[i, j, k] = b
                Hz[i, j, k] -= dt * ((kx[i] * dyx + a) - (ky[j] * dxy + b))


@njit(cache=True, nogil=True)
def update_e_3d(Ex, Ey, Ez, Hx, Hy, Hz, Jx, Jy, Jz,
                cax, cbx, bdx, kdx, cay, cby, bdy, kdy, caz, cbz, bdz, kdz,
                p_exy, p_exz, p_eyz, p_eyx, p_ezx, p_ezy,
                bx, cx, kx, by, cy, ky, bz, cz, kz, dx):
    nx, ny, nz = Ex.shape[0], Ey.shape[1], Ez.shape[2]
    # Ex (nx, ny+1, nz+1): dHz/dy - dHy/dz
    for i in range(nx):
        for j in range(1, ny):
            for k in range(1, nz):
                dzy = (Hz[i, j, k] - Hz[i, j - 1, k]) / dx
                dyz = (Hy[i, j, k] - Hy[i, j, k - 1]) / dx
                a = by[j] * p_exy[i, j, k] + cy[j] * dzy
                b = bz[k] * p_exz[i, j, k] + cz[k] * dyz
                p_exy[i, j, k] = a
                p_exz[i, j, k] = b
                curl = (ky[j] * dzy + a) - (kz[k] * dyz + b)
                jn = kdx[i, j, k] * Jx[i, j, k] + bdx[i, j, k] * Ex[i, j, k]
                Jx[i, j, k] = jn
                Ex[i, j, k] = cax[i, j, k] * Ex[i, j, k] + cbx[i, j, k] * (curl - jn)
    # Ey (nx+1, ny, nz+1): dHx/dz - dHz/dx
    for i in range(1, nx):
        for j in range(ny):
            for k in range(1, nz):
                dxz = (Hx[i, j, k] - Hx[i, j, k - 1]) / dx
                dzx = (Hz[i, j, k] - Hz[i - 1, j, k]) / dx
                a = bz[k] * p_eyz[i, j, k] + cz[k] * dxz
                b = bx[i] * p_eyx[i, j, k] + cx[i] * dzx
                p_eyz[i, j, k] = a
                p_eyx[i, j, k] = b
                curl = (kz[k] * dxz + a) - (kx[i] * dzx + b)
                jn = kdy[i, j, k] * Jy[i, j, k] + bdy[i, j, k] * Ey[i, j, k]
                Jy[i, j, k] = jn
                Ey[i, j, k] = cay[i, j, k] * Ey[i, j, k] + cby[i, j, k] * (curl - jn)
    # Ez (nx+1, ny+1, nz): dHy/dx - dHx/dy
    for i in range(1, nx):
        for j in range(1, ny):
            for k in range(nz):
                dyx = (Hy[i, j, k] - Hy[i - 1, j, k]) / dx
                dxy = (Hx[i, j, k] - Hx[i, j - 1, k]) / dx
                a = bx[i] * p_ezx[i, j, k] + cx[i] * dyx
                b = by[j] * p_ezy[i, j, k] + cy[j] * dxy
                p_ezx[i, j, k] = a
                p_ezy[i, j, k] = b
                curl = (kx[i] * dyx + a) - (ky[j] * dxy + b)
                jn = kdz[i, j, k] * Jz[i, j, k] + bdz[i, j, k] * Ez[i, j, k]
                Jz[i, j, k] = jn
                Ez[i, j, k] = caz[i, j, k] * Ez[i, j, k] + cbz[i, j, k] * (curl - jn)
