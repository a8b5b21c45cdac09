package box;

import javax.crypto.spec.SecretKeySpec;

class Keys {
    SecretKeySpec legacy() {
        byte[] raw = {9, 8, 7, 6, 5, 4, 3, 2};
        return new SecretKeySpec(raw, "DES");
    }
}
