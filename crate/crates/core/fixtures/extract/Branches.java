import javax.crypto.Cipher;

class Branches {
    private Cipher cipher;

    void setup(boolean encrypt, java.security.Key key) throws Exception {
        cipher = Cipher.getInstance("AES/CBC/PKCS5Padding");
        if (encrypt) {
            cipher.init(Cipher.ENCRYPT_MODE, key);
        } else {
            cipher.init(Cipher.DECRYPT_MODE, key);
        }
    }

    byte[] run(byte[][] chunks) throws Exception {
        Cipher c = Cipher.getInstance("DES");
        for (byte[] chunk : chunks) {
            c.update(chunk);
        }
        return c.doFinal();
    }
}
